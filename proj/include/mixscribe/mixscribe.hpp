#pragma once

// DJ mix transcription by multi-pass Itakura-Saito NMF: recovers per-track
// gain and time-warp curves from a mix and its known source tracks.

#include "mixscribe/audio.hpp"
#include "mixscribe/block_sparse.hpp"
#include "mixscribe/errors.hpp"
#include "mixscribe/estimators.hpp"
#include "mixscribe/filtering.hpp"
#include "mixscribe/matrix.hpp"
#include "mixscribe/mixgen.hpp"
#include "mixscribe/multipass.hpp"
#include "mixscribe/nmf.hpp"
#include "mixscribe/spectrogram.hpp"
