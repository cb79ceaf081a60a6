#ifndef DASFORGE_DASFORGE_HPP
#define DASFORGE_DASFORGE_HPP

#include "dasforge/common.hpp"
#include "dasforge/config.hpp"
#include "dasforge/dataset.hpp"
#include "dasforge/demod.hpp"
#include "dasforge/fft.hpp"
#include "dasforge/harness.hpp"
#include "dasforge/image.hpp"
#include "dasforge/model.hpp"
#include "dasforge/nn.hpp"
#include "dasforge/parallel.hpp"
#include "dasforge/plot.hpp"
#include "dasforge/png_io.hpp"
#include "dasforge/report.hpp"
#include "dasforge/rng.hpp"
#include "dasforge/sim.hpp"
#include "dasforge/tsm.hpp"
#include "dasforge/tsne.hpp"

#endif
