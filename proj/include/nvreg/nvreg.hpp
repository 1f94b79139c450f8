#pragma once

#include "nvreg/census.hpp"
#include "nvreg/constants.hpp"
#include "nvreg/engine.hpp"
#include "nvreg/error.hpp"
#include "nvreg/evolution.hpp"
#include "nvreg/hamiltonian.hpp"
#include "nvreg/lattice.hpp"
#include "nvreg/linalg.hpp"
#include "nvreg/network.hpp"
#include "nvreg/noise.hpp"
#include "nvreg/parallel.hpp"
#include "nvreg/protocols.hpp"
#include "nvreg/random.hpp"
#include "nvreg/scans.hpp"
#include "nvreg/selective.hpp"
#include "nvreg/sequence.hpp"
#include "nvreg/spin.hpp"
