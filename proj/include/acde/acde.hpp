#pragma once

#include <acde/balance.hpp>
#include <acde/dataset.hpp>
#include <acde/error.hpp>
#include <acde/inference.hpp>
#include <acde/matching.hpp>
#include <acde/report.hpp>
#include <acde/rng.hpp>
#include <acde/sensitivity.hpp>
#include <acde/simulation.hpp>
