#pragma once

#include "zfbf/mathkit.hpp"
#include "zfbf/channel.hpp"
#include "zfbf/scheduler.hpp"
#include "zfbf/analytic.hpp"
#include "zfbf/zfdp.hpp"
#include "zfbf/harness.hpp"
#include "zfbf/selftest.hpp"
