#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crskit/corpus/ingest.hpp"
#include "crskit/util/strings.hpp"

namespace crskit::corpus {

// Bookkeeping of a generated toy release, used by tests as the expected side.
struct ToyCorpusInfo {
  int train_dialogs = 0;
  int valid_dialogs = 0;
  int test_dialogs = 0;
  long utterances = 0;
  long mentions = 0;
  int items = 0;
  int genres = 0;
  int actors = 0;
  std::vector<std::string> actions;
  std::set<std::string> conv_ids;

  int dialogs() const { return train_dialogs + valid_dialogs + test_dialogs; }
};

namespace detail {

struct ToyWorld {
  std::vector<std::string> titles;
  std::vector<int> genre_of;                 // item -> genre index
  std::vector<std::vector<int>> actors_of;   // item -> actor indices
};

inline const std::vector<std::string>& toy_genres() {
  static const std::vector<std::string> g = {"action", "comedy", "drama", "horror", "romance", "scifi"};
  return g;
}

inline const std::vector<std::string>& toy_actors() {
  static const std::vector<std::string> a = {"alvarez", "brooks", "chen", "dumont", "eriksen", "fujita", "garcia", "hayes"};
  return a;
}

inline const std::vector<std::string>& toy_feelings() {
  static const std::vector<std::string> w = {"funny", "scary", "exciting", "sad", "great", "boring", "fun", "dull"};
  return w;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline ToyWorld make_toy_world(std::mt19937_64& rng) {
  static const std::vector<std::string> adjectives = {"silent", "golden", "broken", "hidden", "last", "midnight"};
  static const std::vector<std::string> nouns = {"harbor", "signal", "garden"};
  ToyWorld w;
  const int n_genres = static_cast<int>(toy_genres().size());
  const int n_actors = static_cast<int>(toy_actors().size());
  int idx = 0;
  for (const auto& a : adjectives)
    for (const auto& n : nouns) {
      std::string title = a + " " + n;
      title[0] = static_cast<char>(title[0] - 'a' + 'A');
      const auto sp = title.find(' ');
      title[sp + 1] = static_cast<char>(title[sp + 1] - 'a' + 'A');
      w.titles.push_back(title + " (" + std::to_string(1980 + static_cast<int>(pick(rng, 40))) + ")");
      w.genre_of.push_back(idx % n_genres);
      const int first = static_cast<int>(pick(rng, static_cast<std::size_t>(n_actors)));
      const int second = (first + 1 + static_cast<int>(pick(rng, static_cast<std::size_t>(n_actors - 1)))) % n_actors;
      w.actors_of.push_back({first, second});
      ++idx;
    }
  return w;
}

inline std::string raw_movie_id(int item) { return std::to_string(1000 + item); }

}  // namespace detail

// Writes a seeded ReDial-layout raw release (12 dialogs: 8 train, 2 valid,
// 2 test) with entity and word KG side files, policy actions and profiles.
inline ToyCorpusInfo write_toy_raw(const fs::path& raw_dir, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const auto world = detail::make_toy_world(rng);
  const auto& genres = detail::toy_genres();
  const auto& actors = detail::toy_actors();
  const auto& feelings = detail::toy_feelings();
  const int n_items = static_cast<int>(world.titles.size());
  fs::create_directories(raw_dir);

  ToyCorpusInfo info;
  info.items = n_items;
  info.genres = static_cast<int>(genres.size());
  info.actors = static_cast<int>(actors.size());
  info.actions = {"ask_preference", "chat", "goodbye", "greet", "recommend"};

  std::string movies = "movieId,movieName,nbMentions\n";
  for (int i = 0; i < n_items; ++i) movies += detail::raw_movie_id(i) + ",\"" + world.titles[static_cast<std::size_t>(i)] + "\",0\n";
  util::write_file(raw_dir / "movies_with_mentions.csv", movies);

  std::string kg, i2e, sf;
  for (int i = 0; i < n_items; ++i) {
    const auto& item = world.titles[static_cast<std::size_t>(i)];
    const auto& g = genres[static_cast<std::size_t>(world.genre_of[static_cast<std::size_t>(i)])];
    kg += item + "\tgenre\t" + g + "\n" + g + "\tgenre_of\t" + item + "\n";
    for (int a : world.actors_of[static_cast<std::size_t>(i)]) {
      const auto& name = actors[static_cast<std::size_t>(a)];
      kg += item + "\tstarring\t" + name + "\n" + name + "\tstarring_of\t" + item + "\n";
    }
    i2e += detail::raw_movie_id(i) + "\t" + item + "\n";
  }
  for (const auto& g : genres) sf += g + "\t" + g + "\n";
  for (const auto& a : actors) sf += a + "\t" + a + "\n";
  util::write_file(raw_dir / "entity_kg.tsv", kg);
  util::write_file(raw_dir / "item2entity.tsv", i2e);
  util::write_file(raw_dir / "surface_forms.tsv", sf);

  std::string wkg;
  for (std::size_t k = 0; k + 1 < feelings.size(); k += 2) {
    wkg += feelings[k] + "\tantonym\t" + feelings[k + 1] + "\n";
    wkg += feelings[k] + "\trelated_to\t" + feelings[(k + 2) % feelings.size()] + "\n";
  }
  wkg += "movie\trelated_to\tfilm\n";
  util::write_file(raw_dir / "word_kg.tsv", wkg);

  // Word vectors for the template vocabulary.
  {
    std::set<std::string> words = {"i", "like", "movies", "do", "you", "yes", "no", "love", "thanks", "bye",
                                   "hello", "hi", "what", "kind", "of", "watch", "should", "movie", "film",
                                   "enjoy", "sounds", "that", "great", "__item__"};
    for (const auto& g : genres) words.insert(g);
    for (const auto& a : actors) words.insert(a);
    for (const auto& f : feelings) words.insert(f);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::string emb;
    char buf[32];
    for (const auto& w : words) {
      emb += w;
      for (int d = 0; d < 8; ++d) {
        std::snprintf(buf, sizeof buf, " %.6f", nd(rng));
        emb += buf;
      }
      emb += "\n";
    }
    util::write_file(raw_dir / kEmbeddingFile, emb);
  }

  const auto items_of_genre = [&](int g) {
    std::vector<int> out;
    for (int i = 0; i < n_items; ++i)
      if (world.genre_of[static_cast<std::size_t>(i)] == g) out.push_back(i);
    return out;
  };
  const auto mention = [](int item) { return "@" + detail::raw_movie_id(item); };

  std::string files[3];
  const int per_split[3] = {8, 2, 2};
  int conv = 0;
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k < per_split[s]; ++k, ++conv) {
      const int g = static_cast<int>(detail::pick(rng, genres.size()));
      const auto pool = items_of_genre(g);
      const auto& genre = genres[static_cast<std::size_t>(g)];
      const auto& feeling = feelings[detail::pick(rng, feelings.size())];
      const int seen = pool[detail::pick(rng, pool.size())];
      const auto& actor = actors[static_cast<std::size_t>(world.actors_of[static_cast<std::size_t>(seen)][0])];
      std::vector<int> recs;
      for (int i : pool)
        if (i != seen) recs.push_back(i);

      json msgs = json::array();
      long mentions = 0;
      const auto add = [&](int sender, const std::string& text, const std::string& action) {
        json m = {{"senderWorkerId", sender}, {"text", text}};
        if (!action.empty()) m["action"] = action;
        msgs.push_back(std::move(m));
        for (std::size_t p = text.find('@'); p != std::string::npos; p = text.find('@', p + 1)) ++mentions;
      };
      add(2, detail::pick(rng, 2) ? "hello ! what kind of movies do you like ?" : "hi , what do you like to watch ?", "greet");
      add(1, "i like " + genre + " movies , something " + feeling + " .", "");
      add(2, "do you like " + actor + " ?", "ask_preference");
      add(1, "yes i love " + mention(seen), "");
      if (detail::pick(rng, 2)) {
        add(2, "that is a " + feelings[detail::pick(rng, feelings.size())] + " movie", "chat");
        add(1, "it was " + feeling, "");
      }
      add(2, "you should watch " + mention(recs[0]) + " or " + mention(recs[1]), "recommend");
      add(1, "thanks , that sounds " + feeling, "");
      add(2, "enjoy ! bye", "goodbye");

      std::string conv_id = "toy-" + std::to_string(conv);
      json rec = {{"conversationId", conv_id},
                  {"initiatorWorkerId", 1},
                  {"respondentWorkerId", 2},
                  {"messages", msgs},
                  {"userProfile",
                   {{"history", json::array({detail::raw_movie_id(seen)})},
                    {"sentences", json::array({"i like " + genre + " movies", "i love " + actor})}}}};
      files[s] += rec.dump() + "\n";
      info.conv_ids.insert(conv_id);
      info.utterances += static_cast<long>(msgs.size());
      info.mentions += mentions;
    }
  }
  util::write_file(raw_dir / "train_data.jsonl", files[0]);
  util::write_file(raw_dir / "valid_data.jsonl", files[1]);
  util::write_file(raw_dir / "test_data.jsonl", files[2]);
  info.train_dialogs = per_split[0];
  info.valid_dialogs = per_split[1];
  info.test_dialogs = per_split[2];
  return info;
}

// Raw toy release under raw_dir, converted to the unified layout in out_dir.
inline ToyCorpusInfo make_toy_corpus(const fs::path& raw_dir, const fs::path& out_dir, std::uint64_t seed = 7) {
  auto info = write_toy_raw(raw_dir, seed);
  ingest_raw(raw_dir, "redial", out_dir);
  return info;
}

}  // namespace crskit::corpus
