#pragma once

#include "opweigh/errors.hpp"
#include "opweigh/poly.hpp"
#include "opweigh/operator_model.hpp"
#include "opweigh/spectral.hpp"
#include "opweigh/constraint.hpp"
#include "opweigh/series.hpp"
#include "opweigh/weighing.hpp"
#include "opweigh/oracles.hpp"
#include "opweigh/problem_io.hpp"
