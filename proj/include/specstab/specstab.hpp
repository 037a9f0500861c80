#pragma once

#include "specstab/errors.hpp"
#include "specstab/graph.hpp"
#include "specstab/spectrum.hpp"
#include "specstab/clustering.hpp"
#include "specstab/parallel.hpp"
#include "specstab/sda_inner.hpp"
#include "specstab/sda_outer.hpp"
#include "specstab/experiments.hpp"
#include "specstab/io.hpp"
