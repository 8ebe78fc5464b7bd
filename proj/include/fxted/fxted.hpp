#pragma once

#include "fxted/constrained.hpp"
#include "fxted/discrete.hpp"
#include "fxted/dynamics.hpp"
#include "fxted/error.hpp"
#include "fxted/graph.hpp"
#include "fxted/linalg.hpp"
#include "fxted/model.hpp"
#include "fxted/oracle.hpp"
#include "fxted/protocol.hpp"
#include "fxted/scenario.hpp"
#include "fxted/scenarios.hpp"
#include "fxted/trace_io.hpp"
