#pragma once

#include "bethe/disorder.hpp"
#include "bethe/dos.hpp"
#include "bethe/free_energy.hpp"
#include "bethe/greens.hpp"
#include "bethe/identities.hpp"
#include "bethe/ldp.hpp"
#include "bethe/parallel.hpp"
#include "bethe/phase.hpp"
#include "bethe/pool.hpp"
#include "bethe/resonance.hpp"
#include "bethe/rng.hpp"
#include "bethe/stats.hpp"
#include "bethe/tree.hpp"
#include "bethe/weak_l1.hpp"
