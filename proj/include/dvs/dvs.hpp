#pragma once

#include "dvs/approx.hpp"
#include "dvs/combinatorics.hpp"
#include "dvs/derandomize.hpp"
#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/exact.hpp"
#include "dvs/expdesign.hpp"
#include "dvs/io.hpp"
#include "dvs/linalg.hpp"
#include "dvs/mcmc.hpp"
#include "dvs/oracle.hpp"
#include "dvs/random.hpp"
#include "dvs/report.hpp"
#include "dvs/version.hpp"
