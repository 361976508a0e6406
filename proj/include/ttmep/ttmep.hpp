#pragma once

#include "ttmep/error.hpp"
#include "ttmep/dense.hpp"
#include "ttmep/tt_tensor.hpp"
#include "ttmep/tt_frame.hpp"
#include "ttmep/tt_io.hpp"
#include "ttmep/problem.hpp"
#include "ttmep/delta.hpp"
#include "ttmep/generator.hpp"
#include "ttmep/problem_io.hpp"
#include "ttmep/solver.hpp"
#include "ttmep/report_io.hpp"
