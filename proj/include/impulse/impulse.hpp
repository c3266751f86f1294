#pragma once

#include "impulse/channel.hpp"
#include "impulse/detector.hpp"
#include "impulse/errors.hpp"
#include "impulse/events.hpp"
#include "impulse/phy.hpp"
#include "impulse/rake.hpp"
#include "impulse/rng.hpp"
#include "impulse/sim.hpp"
#include "impulse/snn.hpp"
#include "impulse/stats.hpp"
