#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "senseprobe/common.hpp"

namespace senseprobe {

using ClassId = int;

// Closed inventory of semantic classes. Ids are dense and equal to the
// line number in the inventory file; names must be unique.
class ClassInventory {
 public:
  ClassInventory() = default;

  explicit ClassInventory(std::vector<std::string> names) {
    for (auto& n : names) add(n);
  }

  ClassId add(const std::string& name) {
    if (name.empty()) throw std::invalid_argument("empty class name");
    auto [it, inserted] =
        by_name_.emplace(name, static_cast<ClassId>(names_.size()));
    if (!inserted) {
      throw std::invalid_argument("duplicate class name: " + name);
    }
    names_.push_back(name);
    return it->second;
  }

  std::optional<ClassId> id_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  ClassId require(const std::string& name) const {
    auto id = id_of(name);
    if (!id) throw std::invalid_argument("unknown S-class name: " + name);
    return *id;
  }

  const std::string& name(ClassId id) const {
    return names_.at(static_cast<std::size_t>(id));
  }

  int size() const { return static_cast<int>(names_.size()); }

  const std::vector<std::string>& names() const { return names_; }

  static ClassInventory load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open inventory: " + path);
    ClassInventory inv;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      inv.add(line);
    }
    if (inv.size() == 0) throw std::runtime_error("empty inventory: " + path);
    return inv;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write inventory: " + path);
    for (const auto& n : names_) out << n << "\n";
  }

  // The 34 parent classes used by the default configuration, in
  // frequency order.
  static ClassInventory default_inventory() {
    return ClassInventory({
        "location",
        "person",
        "organization",
        "art",
        "event",
        "broadcast_program",
        "title",
        "product",
        "living_thing",
        "people-ethnicity",
        "language",
        "broadcast_network",
        "time",
        "religion-religion",
        "award",
        "internet-website",
        "god",
        "education-educational_degree",
        "food",
        "computer-programming_language",
        "metropolitan_transit-transit_line",
        "transit",
        "finance-currency",
        "disease",
        "chemistry",
        "body_part",
        "finance-stock_exchange",
        "law",
        "medicine-medical_treatment",
        "medicine-drug",
        "broadcast-tv_channel",
        "medicine-symptom",
        "biology",
        "visual_art-color",
    });
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, ClassId> by_name_;
};

}  // namespace senseprobe
