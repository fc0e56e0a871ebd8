#ifndef TOPOSEG_TOPOSEG_HPP
#define TOPOSEG_TOPOSEG_HPP

#include "toposeg/diffusion.hpp"
#include "toposeg/image.hpp"
#include "toposeg/lattice.hpp"
#include "toposeg/metrics.hpp"
#include "toposeg/report.hpp"
#include "toposeg/segmentation.hpp"
#include "toposeg/topo.hpp"

#endif
