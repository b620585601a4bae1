#ifndef EXCHMAT_EXCHMAT_HPP
#define EXCHMAT_EXCHMAT_HPP

#include "exchmat/combclt.hpp"
#include "exchmat/concentration.hpp"
#include "exchmat/ensemble.hpp"
#include "exchmat/linalg.hpp"
#include "exchmat/matrix.hpp"
#include "exchmat/parallel.hpp"
#include "exchmat/rng.hpp"
#include "exchmat/runner.hpp"
#include "exchmat/seed_io.hpp"
#include "exchmat/spectral.hpp"
#include "exchmat/ssv.hpp"

#endif
