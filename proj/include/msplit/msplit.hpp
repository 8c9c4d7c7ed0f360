#pragma once

/// @file msplit.hpp
/// Umbrella header.

#include "msplit/error.hpp"
#include "msplit/linalg.hpp"
#include "msplit/parallel.hpp"
#include "msplit/grid.hpp"
#include "msplit/fine_assembly.hpp"
#include "msplit/coarse_system.hpp"
#include "msplit/gmsfem.hpp"
#include "msplit/splitting.hpp"
#include "msplit/config.hpp"
#include "msplit/experiment.hpp"
