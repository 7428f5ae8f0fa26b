#pragma once

#include "egoflux/adf.hpp"
#include "egoflux/classifier.hpp"
#include "egoflux/corpus.hpp"
#include "egoflux/distributions.hpp"
#include "egoflux/features.hpp"
#include "egoflux/granger.hpp"
#include "egoflux/ols.hpp"
#include "egoflux/pipeline.hpp"
#include "egoflux/report.hpp"
#include "egoflux/series.hpp"
#include "egoflux/synth.hpp"
#include "egoflux/textpipe.hpp"
#include "egoflux/topics.hpp"
#include "egoflux/version.hpp"
