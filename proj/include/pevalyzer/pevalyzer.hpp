// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "analyze.hpp"
#include "bench.hpp"
#include "casesplit.hpp"
#include "expected.hpp"
#include "forward.hpp"
#include "frontend.hpp"
#include "handelman.hpp"
#include "normalize.hpp"
#include "oracle.hpp"
#include "poly.hpp"
#include "printer.hpp"
#include "rational.hpp"
#include "simplex.hpp"
#include "solver.hpp"
#include "templates.hpp"
#include "term.hpp"
#include "transformer.hpp"
