#pragma once

namespace ppde {

// Library version, recorded in run manifests.
inline constexpr const char* kVersion = "0.1.0";
// Version of the config text format accepted by Config::parse_text.
inline constexpr int kConfigFormat = 1;
// Version of the manifest layout written next to CSV outputs.
inline constexpr int kManifestFormat = 1;

}  // namespace ppde
