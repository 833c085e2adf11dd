#ifndef SHLAB_SHLAB_HPP
#define SHLAB_SHLAB_HPP

#include "shlab/analysis.hpp"
#include "shlab/band.hpp"
#include "shlab/fft.hpp"
#include "shlab/grid.hpp"
#include "shlab/harness.hpp"
#include "shlab/io.hpp"
#include "shlab/noise.hpp"
#include "shlab/operators.hpp"
#include "shlab/reduced.hpp"
#include "shlab/rng.hpp"
#include "shlab/sh.hpp"
#include "shlab/studies.hpp"

#endif
