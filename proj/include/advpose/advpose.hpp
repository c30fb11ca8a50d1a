#pragma once

// Umbrella header: worst-case rigid-transform search against pose-sensitive
// vision scorers. Pull in individual headers instead when build time matters
// (remote.hpp / stub_server.hpp drag in the HTTP stack).

#include "advpose/attack.hpp"
#include "advpose/cma.hpp"
#include "advpose/config.hpp"
#include "advpose/encoder.hpp"
#include "advpose/error.hpp"
#include "advpose/linalg.hpp"
#include "advpose/naturalness.hpp"
#include "advpose/objective.hpp"
#include "advpose/pose.hpp"
#include "advpose/raster.hpp"
#include "advpose/remote.hpp"
#include "advpose/rng.hpp"
#include "advpose/scene.hpp"
#include "advpose/selection.hpp"
#include "advpose/stub_server.hpp"
#include "advpose/wire.hpp"
