#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#ifndef FORMCOUNT_CLI_PATH
#error "FORMCOUNT_CLI_PATH must point at the formcount binary"
#endif

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(const std::string& args)
{
    const auto dir = std::filesystem::temp_directory_path();
    const auto err_path = dir / ("formcount_cli_test_" + std::to_string(::getpid()) + ".err");
    const std::string cmd = std::string(FORMCOUNT_CLI_PATH) + " " + args + " 2>" + err_path.string();
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
        r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err_path);
    std::stringstream ss;
    ss << in.rdbuf();
    r.err = ss.str();
    std::filesystem::remove(err_path);
    return r;
}

} // namespace

TEST(Cli, NoArgumentsIsUsageError)
{
    const auto r = run("");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Subcommands"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError)
{
    EXPECT_EQ(run("count --bogus 1").code, 2);
    EXPECT_EQ(run("nonsense").code, 2);
    EXPECT_EQ(run("count --t abc").code, 2);
}

TEST(Cli, HelpAndVersion)
{
    EXPECT_EQ(run("--help").code, 0);
    const auto v = run("--version");
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find("1.0.0"), std::string::npos);
}

TEST(Cli, InvalidInputReportsJsonError)
{
    const auto r = run("count --identity --lo 1 --hi 0 --t 2");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("\"error\":\"validation\""), std::string::npos);
    EXPECT_EQ(run("count --identity --p 1 --q 1 --lo 0 --hi 1 --t 2").code, 0);
    EXPECT_EQ(run("count --d 3 --lo 0 --hi 1 --t 2").code, 1);
    EXPECT_EQ(run("volume --identity --lo 0 --hi 1 --T 0").code, 1);
    EXPECT_EQ(run("count --config /nonexistent/config.json").code, 1);
}

TEST(Cli, CountOutput)
{
    const auto r = run("count --identity --lo -0.5 --hi 0.5 --t_grid 1,2");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("# formcount 1.0.0 command=count", 0), 0u);
    EXPECT_NE(r.out.find("t,lo,hi,count,points,boundary_cases,exact\n"), std::string::npos);
    EXPECT_NE(r.out.find("\n1,-0.5,0.5,1,"), std::string::npos);
    EXPECT_NE(r.out.find("\n2,-0.5,0.5,9,"), std::string::npos);
}

TEST(Cli, ConfigFileAndFlagsAgree)
{
    const auto path = std::filesystem::temp_directory_path() / "formcount_cli_test_config.json";
    {
        std::ofstream f(path);
        f << R"({"p": 3, "q": 2, "d": 2, "g_seed": 4, "lo": -0.25, "hi": 0.5, "t": 10})";
    }
    const auto a = run("count --config " + path.string());
    const auto b = run("count --p 3 --q 2 --d 2 --g_seed 4 --lo -0.25 --hi 0.5 --t 10");
    std::filesystem::remove(path);
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    // The manifest records the config verbatim, so compare the data rows only.
    EXPECT_EQ(a.out.substr(a.out.find('\n')), b.out.substr(b.out.find('\n')));
}

TEST(Cli, OutFile)
{
    const auto path = std::filesystem::temp_directory_path() / "formcount_cli_test_out.csv";
    const auto r = run("supmin --identity --t 1 --N 1 --out " + path.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::filesystem::remove(path);
    EXPECT_NE(ss.str().find("\n1,1,0.5,-0.5,1,"), std::string::npos);
}

TEST(Cli, RerunsAreByteIdentical)
{
    const std::string cmds[] = {
        "cf --p 2 --q 2 --d 2 --g_seed 3 --samples 50000 --seed 9",
        "volume --p 2 --q 1 --d 2 --g_seed 4 --lo -1 --hi 2 --T_grid 5,10 --samples 50000 --seed 9",
        "count --p 3 --q 2 --d 2 --g_seed 5 --lo -0.2 --hi 0.3 --t 12",
        "histogram --p 2 --q 2 --d 2 --g_seed 6 --lo -3 --hi 3 --width 0.25 --t 15",
        "rogers --n 3 --V 150 --k 30 --prime 1009 --seed 9",
        "fixed-target --p 3 --q 2 --d 2 --g_seed 7 --kappa 1 --c 2 --t_grid 8,12 --samples 50000",
        "uniform-target --p 3 --q 2 --d 2 --g_seed 8 --kappa 0.5 --t_grid 10 --samples 50000",
        "supmin --p 2 --q 1 --d 2 --g_seed 9 --t_grid 2,4 --N 2",
    };
    for (const auto& c : cmds) {
        const auto a = run("--workers 2 " + c), b = run("--workers 2 " + c);
        ASSERT_EQ(a.code, 0) << c << "\n" << a.err;
        EXPECT_FALSE(a.out.empty());
        EXPECT_EQ(a.out, b.out) << c;
    }
}

TEST(Cli, WorkerCountDoesNotChangeData)
{
    const std::string c = "histogram --p 2 --q 2 --d 2 --g_seed 6 --lo -3 --hi 3 --width 0.25 --t 15";
    const auto a = run("--workers 1 " + c), b = run("--workers 3 " + c);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out.substr(a.out.find('\n')), b.out.substr(b.out.find('\n')));
}

TEST(Cli, VerifySubset)
{
    const auto r = run("verify --only 3,9");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("PASS criterion 3"), std::string::npos);
    EXPECT_NE(r.out.find("PASS criterion 9"), std::string::npos);
}
