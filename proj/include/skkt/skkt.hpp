#pragma once

// Convenience header pulling in the whole library.

#include "skkt/active_set.hpp"
#include "skkt/certify.hpp"
#include "skkt/dynamics.hpp"
#include "skkt/errors.hpp"
#include "skkt/integrate.hpp"
#include "skkt/operators.hpp"
#include "skkt/oracle.hpp"
#include "skkt/problem.hpp"
#include "skkt/switching.hpp"
#include "skkt/types.hpp"
