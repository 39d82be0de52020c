#pragma once

namespace vlcap {

using TokenId = int;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kNumReserved = 4;

}  // namespace vlcap
