#ifndef MTSG_MTSG_HPP
#define MTSG_MTSG_HPP

// Umbrella header for the whole toolkit.

#include "mtsg/bundle.hpp"
#include "mtsg/error.hpp"
#include "mtsg/experiment.hpp"
#include "mtsg/learners.hpp"
#include "mtsg/matrix.hpp"
#include "mtsg/metrics.hpp"
#include "mtsg/mtr.hpp"
#include "mtsg/parallel.hpp"
#include "mtsg/random.hpp"
#include "mtsg/random_forest.hpp"
#include "mtsg/report.hpp"
#include "mtsg/svr.hpp"
#include "mtsg/synthetic.hpp"
#include "mtsg/tabular.hpp"

#endif  // MTSG_MTSG_HPP
