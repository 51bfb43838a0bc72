#pragma once

#include "maskverify/bench.hpp"
#include "maskverify/digest.hpp"
#include "maskverify/errors.hpp"
#include "maskverify/generator.hpp"
#include "maskverify/json_io.hpp"
#include "maskverify/microworld.hpp"
#include "maskverify/parallel.hpp"
#include "maskverify/preference.hpp"
#include "maskverify/prompt.hpp"
#include "maskverify/random.hpp"
#include "maskverify/selector.hpp"
#include "maskverify/templates.hpp"
#include "maskverify/transcript.hpp"
#include "maskverify/verifier.hpp"
