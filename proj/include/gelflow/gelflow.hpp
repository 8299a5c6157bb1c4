#pragma once

#include "gelflow/common.hpp"
#include "gelflow/mesh.hpp"
#include "gelflow/quadrature.hpp"
#include "gelflow/fem.hpp"
#include "gelflow/core_model.hpp"
#include "gelflow/assembly.hpp"
#include "gelflow/linsolve.hpp"
#include "gelflow/scheme.hpp"
#include "gelflow/verify.hpp"
#include "gelflow/io.hpp"
