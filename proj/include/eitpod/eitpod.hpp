#pragma once

#include "eitpod/error.hpp"
#include "eitpod/evaluation.hpp"
#include "eitpod/fem.hpp"
#include "eitpod/hash.hpp"
#include "eitpod/io.hpp"
#include "eitpod/mesh.hpp"
#include "eitpod/placement.hpp"
#include "eitpod/pod.hpp"
#include "eitpod/projection.hpp"
#include "eitpod/protocol.hpp"
#include "eitpod/render.hpp"
#include "eitpod/synth.hpp"
