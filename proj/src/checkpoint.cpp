#include "semdrive/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace semdrive {

namespace {
constexpr char kMagic[8] = {'S', 'E', 'M', 'D', 'R', 'I', 'V', 'E'};
}

void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const std::vector<std::pair<std::string, std::vector<double>>>& sections) {
    nlohmann::json header;
    header["format"] = 1;
    header["meta"] = nlohmann::json::parse(meta_json);
    header["sections"] = nlohmann::json::array();
    for (const auto& [name, values] : sections)
        header["sections"].push_back({{"name", name}, {"count", values.size()}});
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, values] : sections)
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, 8) != std::string(kMagic, 8))
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path);
    const nlohmann::json header = nlohmann::json::parse(hs);

    LoadedCheckpoint ck;
    ck.meta_json = header.at("meta").dump();
    for (const auto& section : header.at("sections")) {
        const std::string name = section.at("name").get<std::string>();
        const std::size_t count = section.at("count").get<std::size_t>();
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw std::runtime_error("load_checkpoint: truncated section " + name);
        ck.sections[name] = std::move(values);
    }
    return ck;
}

}  // namespace semdrive
