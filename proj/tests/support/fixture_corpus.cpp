#include "fixture_corpus.hpp"

#include <atomic>
#include <fstream>
#include <unistd.h>

#include "muie/geometry.hpp"
#include "muie/serialization.hpp"

namespace fs = std::filesystem;

namespace muie::testing {

namespace {

constexpr int kImageW = 16, kImageH = 12;
constexpr int kVideoW = 14, kVideoH = 8, kFrames = 4;
constexpr double kAudioSeconds = 12.0;

struct Pooled {
  const char* surface;
  const char* label;
};
constexpr Pooled kEntities[] = {{"Alice Smith", "person"}, {"Paris", "location"},
                                {"ACME Corp", "organization"}, {"Bob Jones", "person"},
                                {"Berlin", "location"}, {"Globex", "organization"}};

struct PooledRelation {
  Pooled subject;
  const char* relation;
  Pooled object;
};
constexpr PooledRelation kRelations[] = {
    {{"Alice Smith", "person"}, "works_for", {"ACME Corp", "organization"}},
    {{"Bob Jones", "person"}, "lives_in", {"Berlin", "location"}},
    {{"Globex", "organization"}, "based_in", {"Paris", "location"}},
};

ImageMask band(int width, int height, int k, int y0, int rows) {
  DenseMask d = DenseMask::Zero(height, width);
  d.block(y0, (2 * k) % width, rows, 2).setConstant(true);
  return rle_encode(d);
}

GroundingRef grounding_for(Modality m, int k) {
  switch (m) {
    case Modality::image: return GroundingRef(band(kImageW, kImageH, k, 2, 3 + k % 3));
    case Modality::audio: return GroundingRef(AudioSegment(1.5 * k, 1.5 * k + 1.0));
    case Modality::video: {
      std::map<int, ImageMask> frames;
      for (int f = 0; f < 3; ++f) frames.emplace(f, band(kVideoW, kVideoH, k, 1 + f % 2, 3));
      return GroundingRef(Tracklet(std::move(frames)));
    }
    case Modality::text: break;
  }
  throw InvalidArgument("no grounding for text");
}

// Instance-level grounding, away from every mention grounding.
GroundingRef loose_grounding(Modality m) {
  switch (m) {
    case Modality::image: {
      DenseMask d = DenseMask::Zero(kImageH, kImageW);
      d.block(10, 0, 2, kImageW).setConstant(true);
      return GroundingRef(rle_encode(d));
    }
    case Modality::audio: return GroundingRef(AudioSegment(10.0, 10.5));
    case Modality::video: {
      DenseMask d = DenseMask::Zero(kVideoH, kVideoW);
      d.block(6, 0, 2, kVideoW).setConstant(true);
      return GroundingRef(Tracklet({{3, rle_encode(d)}}));
    }
    case Modality::text: break;
  }
  throw InvalidArgument("no grounding for text");
}

void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << "placeholder\n";
}

}  // namespace

const std::vector<GridCell>& benchmark_grid() {
  using C = ModalityCombo;
  static const std::vector<GridCell> grid{
      {C::i, Task::ner, "PASCAL-C"},      {C::i, Task::re, "VRD"},
      {C::i, Task::ee, "imSitu"},         {C::v, Task::ee, "VidSitu"},
      {C::a, Task::ner, "ACE05-Aud"},     {C::a, Task::re, "ReTACRED"},
      {C::t_i, Task::ner, "Twt17"},       {C::t_i, Task::re, "MNRE"},
      {C::t_i, Task::ee, "M2E2"},         {C::t_v, Task::ee, "VidSitu-Txt"},
      {C::t_a, Task::ner, "ACE05-Aud"},   {C::t_a, Task::re, "ReTACRED"},
      {C::i_a, Task::re, "MNRE-Aud"},     {C::t_i_a, Task::ner, "Twt17-Aud"},
      {C::v_a, Task::ee, "VidSitu-Aud"},
  };
  return grid;
}

fs::path write_fixture_corpus(const fs::path& dir, int per_cell) {
  fs::create_directories(dir / "gold");
  fs::create_directories(dir / "media");
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  manifest << Json{{"format_version", 1}, {"corpus", "fixture"}, {"version", "1"}}.dump() << "\n";

  const auto& grid = benchmark_grid();
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const GridCell& cell = grid[c];
    const auto mods = modalities(cell.combo);
    std::vector<Modality> groundable;
    for (Modality m : mods) {
      if (m != Modality::text) groundable.push_back(m);
    }
    for (int j = 0; j < per_cell; ++j) {
      const int seed = static_cast<int>(c) * per_cell + j;
      std::string combo_tag(to_string(cell.combo));
      for (char& ch : combo_tag) {
        if (ch == '+') ch = '_';
      }
      const std::string id = cell.dataset + "/" + combo_tag + "/" + std::to_string(j);

      GoldAnnotation gold;
      gold.instance_id = id;
      gold.task = cell.task;
      int k = 0;  // grounded mention counter
      auto ground = [&](GroundingSlots& slots) {
        for (Modality m : groundable) slots.attach(grounding_for(m, k));
        ++k;
      };
      std::vector<std::string> labels;
      std::vector<std::string> roles;
      std::string text;
      switch (cell.task) {
        case Task::ner: {
          const int n = 1 + seed % 6;
          for (int i = 0; i < n; ++i) {
            EntityMention e{kEntities[i].surface, kEntities[i].label, {}};
            ground(e.groundings);
            gold.entities.push_back(std::move(e));
            text += std::string(i ? " and " : "") + kEntities[i].surface;
          }
          labels = {"person", "location", "organization"};
          text += " were mentioned.";
          break;
        }
        case Task::re: {
          const int n = 1 + seed % 3;
          for (int i = 0; i < n; ++i) {
            const auto& r = kRelations[i];
            RelationTriple t{{r.subject.surface, r.subject.label, {}}, r.relation,
                             {r.object.surface, r.object.label, {}}};
            ground(t.subject.groundings);
            ground(t.object.groundings);
            gold.relations.push_back(std::move(t));
            text += std::string(r.subject.surface) + " " + r.relation + " " + r.object.surface + ". ";
          }
          labels = {"works_for", "lives_in", "based_in"};
          break;
        }
        case Task::ee: {
          EventRecord attack{"attacked", "Conflict:Attack", {}};
          attack.arguments.push_back({"soldiers", "Attacker", {}});
          attack.arguments.push_back({"village", "Target", {}});
          for (auto& a : attack.arguments) ground(a.groundings);
          gold.events.push_back(std::move(attack));
          text = "The soldiers attacked the village.";
          if (seed % 2 == 1) {
            EventRecord meet{"met", "Contact:Meet", {{"leaders", "Entity", {}}}};
            ground(meet.arguments[0].groundings);
            gold.events.push_back(std::move(meet));
            text += " Later the leaders met.";
          }
          labels = {"Conflict:Attack", "Contact:Meet"};
          roles = {"Attacker", "Target", "Entity"};
          break;
        }
      }
      if (j % 2 == 1) {
        for (Modality m : groundable) gold.groundings.push_back(loose_grounding(m));
      }

      const std::string stem = "i" + std::to_string(seed);
      const fs::path gold_rel = fs::path("gold") / (stem + ".json");
      std::ofstream(dir / gold_rel, std::ios::binary) << to_json(gold).dump(2) << "\n";

      Json entry{{"instance_id", id},
                 {"dataset", cell.dataset},
                 {"modality_combo", to_string(cell.combo)},
                 {"task", to_string(cell.task)},
                 {"alignment", j % 2 == 0 ? "shared" : "specific"},
                 {"gold", gold_rel.string()},
                 {"labels", labels}};
      if (!roles.empty()) entry["argument_roles"] = roles;
      if (includes(cell.combo, Modality::text)) entry["text"] = text;
      if (includes(cell.combo, Modality::image)) {
        const std::string p = "media/" + stem + ".png";
        touch(dir / p);
        entry["image"] = {{"path", p}, {"width", kImageW}, {"height", kImageH}};
      }
      if (includes(cell.combo, Modality::audio)) {
        const std::string p = "media/" + stem + ".wav";
        touch(dir / p);
        entry["audio"] = {{"path", p}, {"duration", kAudioSeconds}};
      }
      if (includes(cell.combo, Modality::video)) {
        const std::string p = "media/" + stem + ".mp4";
        touch(dir / p);
        entry["video"] = {{"path", p},      {"frame_count", kFrames}, {"fps", 2.0},
                          {"width", kVideoW}, {"height", kVideoH}};
      }
      manifest << entry.dump() << "\n";
    }
  }
  return dir / "manifest.jsonl";
}

fs::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const fs::path p = fs::temp_directory_path() /
                     ("muie-" + name + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace muie::testing
