#pragma once

namespace sgdsim {

#ifndef SGDSIM_GIT_REV
#define SGDSIM_GIT_REV "untracked"
#endif

inline constexpr const char* kVersion = "sgdsim-0.3.0+" SGDSIM_GIT_REV;

}  // namespace sgdsim
