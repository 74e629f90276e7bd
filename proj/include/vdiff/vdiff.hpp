#pragma once

// Umbrella header for the image-to-video diffusion toolkit.

#include "apps.hpp"
#include "attention.hpp"
#include "autograd.hpp"
#include "checkpoint.hpp"
#include "common.hpp"
#include "condition.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "diffusion.hpp"
#include "fft.hpp"
#include "frame_init.hpp"
#include "metrics.hpp"
#include "noise.hpp"
#include "patchify.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "tensor.hpp"
#include "train.hpp"
#include "unet.hpp"
#include "video_io.hpp"
