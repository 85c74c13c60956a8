#ifndef KURASTAB_KURASTAB_HPP
#define KURASTAB_KURASTAB_HPP

#include "error.hpp"
#include "network.hpp"
#include "generators.hpp"
#include "io.hpp"
#include "flow.hpp"
#include "spectral.hpp"
#include "sensitivity.hpp"
#include "optimizer.hpp"
#include "dynamics.hpp"
#include "analysis.hpp"

#endif  // KURASTAB_KURASTAB_HPP
