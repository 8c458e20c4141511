#pragma once

// Convenience header pulling in the whole library.

#include "robustkf/cases.hpp"
#include "robustkf/design.hpp"
#include "robustkf/error.hpp"
#include "robustkf/lmi.hpp"
#include "robustkf/model.hpp"
#include "robustkf/model_io.hpp"
#include "robustkf/serialize.hpp"
#include "robustkf/sim.hpp"
#include "robustkf/solver.hpp"
#include "robustkf/sparse.hpp"
#include "robustkf/verify.hpp"
