#pragma once

#include "airpose/ablation.hpp"
#include "airpose/airpose_plus.hpp"
#include "airpose/body_model.hpp"
#include "airpose/camera.hpp"
#include "airpose/dataset_io.hpp"
#include "airpose/estimator.hpp"
#include "airpose/gradients.hpp"
#include "airpose/losses.hpp"
#include "airpose/metrics.hpp"
#include "airpose/model.hpp"
#include "airpose/pose_prior.hpp"
#include "airpose/rotation.hpp"
#include "airpose/session.hpp"
#include "airpose/sync.hpp"
#include "airpose/synthgen.hpp"
#include "airpose/timing.hpp"
#include "airpose/wire.hpp"
