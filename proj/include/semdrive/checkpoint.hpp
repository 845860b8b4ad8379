#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace semdrive {

// Flat binary checkpoint: magic, JSON header (metadata + section table),
// then raw little-endian doubles per section in table order.
void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const std::vector<std::pair<std::string, std::vector<double>>>& sections);

struct LoadedCheckpoint {
    std::string meta_json;
    std::map<std::string, std::vector<double>> sections;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace semdrive
