#pragma once
// Umbrella header.

#include "ssfkit/numkernel.hpp"
#include "ssfkit/random.hpp"
#include "ssfkit/quadrature.hpp"
#include "ssfkit/models.hpp"
#include "ssfkit/resolvent.hpp"
#include "ssfkit/oracles.hpp"
#include "ssfkit/ssf.hpp"
#include "ssfkit/resonance.hpp"
#include "ssfkit/scattering.hpp"
#include "ssfkit/specflow.hpp"
#include "ssfkit/config.hpp"
#include "ssfkit/report.hpp"
#include "ssfkit/verify.hpp"
