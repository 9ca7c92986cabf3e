#pragma once

#include "analysis.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "linalg.hpp"
#include "mlp.hpp"
#include "regression.hpp"
#include "rng.hpp"
#include "svg.hpp"
#include "version.hpp"
