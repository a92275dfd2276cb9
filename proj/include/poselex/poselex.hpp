#pragma once

#include "poselex/codebook.hpp"
#include "poselex/decoder.hpp"
#include "poselex/error.hpp"
#include "poselex/keyframe.hpp"
#include "poselex/lexicon.hpp"
#include "poselex/pipeline.hpp"
#include "poselex/skeleton.hpp"
#include "poselex/synthetic.hpp"
