#pragma once

#include "adjopt/ad/sweeps.hpp"
#include "adjopt/ad/tape.hpp"
#include "adjopt/adjoint/adjoint.hpp"
#include "adjopt/dense.hpp"
#include "adjopt/error.hpp"
#include "adjopt/fd.hpp"
#include "adjopt/grayscott/grayscott.hpp"
#include "adjopt/integrate/jacobian.hpp"
#include "adjopt/integrate/model.hpp"
#include "adjopt/integrate/theta.hpp"
#include "adjopt/linalg/csr.hpp"
#include "adjopt/linalg/gmres.hpp"
#include "adjopt/linalg/operator.hpp"
#include "adjopt/profile.hpp"
#include "adjopt/sparse/coloring.hpp"
#include "adjopt/sparse/pattern.hpp"
