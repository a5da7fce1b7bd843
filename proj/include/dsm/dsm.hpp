#pragma once

#include "dsm/errors.hpp"
#include "dsm/linalg.hpp"
#include "dsm/matrix_io.hpp"
#include "dsm/model.hpp"
#include "dsm/flow.hpp"
#include "dsm/regularization.hpp"
#include "dsm/oracles.hpp"
#include "dsm/problems.hpp"
