#pragma once

#include "adjmm/diagnostics.hpp"
#include "adjmm/estimate.hpp"
#include "adjmm/estimator_one.hpp"
#include "adjmm/estimator_two.hpp"
#include "adjmm/io.hpp"
#include "adjmm/linalg.hpp"
#include "adjmm/operator.hpp"
#include "adjmm/oracle.hpp"
#include "adjmm/rng.hpp"
#include "adjmm/sampling.hpp"
#include "adjmm/tomo.hpp"
