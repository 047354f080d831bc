#pragma once

// Published reference values, used to annotate reports. Never test oracles.
namespace alignsim::references {

inline constexpr double kMfMovieLensRmse = 1.2142;
inline constexpr double kMfMovieLensMae = 0.9971;
inline constexpr double kAgentMovieLensAccuracy1to1 = 0.8203;
inline constexpr double kHumanPagesPerSession = 5.3;
inline constexpr double kAgentPurchaseRateGap = 2.5;
inline constexpr double kAgentPlusExactMatchAccuracy = 52.92;

}  // namespace alignsim::references
