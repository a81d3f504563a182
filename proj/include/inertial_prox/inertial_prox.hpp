#pragma once

#include "inertial_prox/bench.hpp"
#include "inertial_prox/engine.hpp"
#include "inertial_prox/linalg.hpp"
#include "inertial_prox/operators.hpp"
#include "inertial_prox/params.hpp"
#include "inertial_prox/random.hpp"
#include "inertial_prox/saddle.hpp"
#include "inertial_prox/splitting.hpp"
