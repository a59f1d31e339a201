#pragma once

// Umbrella header.

#include "formcount/commands.hpp"
#include "formcount/discrepancy.hpp"
#include "formcount/errors.hpp"
#include "formcount/experiments.hpp"
#include "formcount/forms.hpp"
#include "formcount/geometry.hpp"
#include "formcount/lattice.hpp"
#include "formcount/rng.hpp"
