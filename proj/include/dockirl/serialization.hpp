#pragma once

#include <filesystem>
#include <string>

#include "dockirl/dockworld.hpp"
#include "dockirl/expert_gen.hpp"

namespace dockirl {

/// Single-line JSON with a fixed field order; reals use 6 significant digits.
std::string world_to_json(const World& world);
World world_from_json(const std::string& text);

/// One line per record: {"world":{...},"states":[[t,x,y,psi,u,v,r],...],"split":"train"|"test"}.
std::string dataset_to_jsonl(const Dataset& dataset);
Dataset dataset_from_jsonl(const std::string& text);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace dockirl
