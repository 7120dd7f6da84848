#pragma once

#include "prodgraph/basis.hpp"
#include "prodgraph/batch_lasso.hpp"
#include "prodgraph/big_gram.hpp"
#include "prodgraph/covariance.hpp"
#include "prodgraph/csv.hpp"
#include "prodgraph/dims.hpp"
#include "prodgraph/harness.hpp"
#include "prodgraph/homotopy.hpp"
#include "prodgraph/io.hpp"
#include "prodgraph/metrics.hpp"
#include "prodgraph/sim.hpp"
#include "prodgraph/special.hpp"
#include "prodgraph/structured.hpp"
#include "prodgraph/wald.hpp"
