#pragma once

// Umbrella header: the whole library in one include.

#include "qnewt/differential.hpp"
#include "qnewt/error.hpp"
#include "qnewt/euclidean.hpp"
#include "qnewt/kantorovich.hpp"
#include "qnewt/pseudolinear.hpp"
#include "qnewt/qspace.hpp"
#include "qnewt/solver.hpp"
#include "qnewt/trace_io.hpp"
#include "qnewt/tree_complex.hpp"
