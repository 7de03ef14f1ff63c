#pragma once

#include "kcm/lattice.hpp"
#include "kcm/family.hpp"
#include "kcm/rng.hpp"
#include "kcm/bootstrap.hpp"
#include "kcm/harris.hpp"
#include "kcm/dual.hpp"
#include "kcm/stats.hpp"
#include "kcm/parallel.hpp"
#include "kcm/auxperc.hpp"
#include "kcm/lab.hpp"
#include "kcm/io.hpp"
