#pragma once

#include "rfcdelay/audit.hpp"
#include "rfcdelay/errors.hpp"
#include "rfcdelay/history.hpp"
#include "rfcdelay/integrate.hpp"
#include "rfcdelay/io.hpp"
#include "rfcdelay/lyapunov.hpp"
#include "rfcdelay/manifest.hpp"
#include "rfcdelay/paper_systems.hpp"
#include "rfcdelay/parallel.hpp"
#include "rfcdelay/probes.hpp"
#include "rfcdelay/random.hpp"
#include "rfcdelay/signal.hpp"
#include "rfcdelay/signal_json.hpp"
#include "rfcdelay/system.hpp"
#include "rfcdelay/trajectory.hpp"
