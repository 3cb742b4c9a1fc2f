// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "specguard/core.hpp"
#include "specguard/ingest.hpp"
#include "specguard/generators.hpp"
#include "specguard/charmatrix.hpp"
#include "specguard/variance.hpp"
#include "specguard/pseudospec.hpp"
#include "specguard/stats.hpp"
#include "specguard/oracle.hpp"
