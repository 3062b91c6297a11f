#pragma once

#include "mumimo/error.hpp"
#include "mumimo/numerics.hpp"
#include "mumimo/channel.hpp"
#include "mumimo/channel_io.hpp"
#include "mumimo/precoding.hpp"
#include "mumimo/detection.hpp"
#include "mumimo/metrics.hpp"
#include "mumimo/optimizer.hpp"
#include "mumimo/harness.hpp"
#include "mumimo/verify.hpp"
