// verify.hpp — built-in self-check suites over closed forms and seeded random
// models.  Used by the `verify` CLI verb; any failing check makes the process
// exit nonzero.
#pragma once

#include <qretro/run.hpp>

#include <cstdint>
#include <string>

namespace qretro::shell {

enum class VerifySuite { analytic, bayes, invariants, all };

VerifySuite verify_suite_from(const std::string& name);

RunReport verify(VerifySuite suite, std::uint64_t seed);

}  // namespace qretro::shell
