#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "promind/rng.hpp"

namespace promind::corpus {

enum class TokenClass {
  Special,
  Punct,
  Name,
  Profession,
  City,
  Org,
  Concept,
  RelationWord,
  Determiner,
  Preposition,
  Pronoun,
  Verb,
  Temporal,
  Filler,
  QuestionWord,
  ChatWord,
  CommonNoun,
  Misc,
};

enum class Role {
  Subject,
  Verb,
  Object,
  Temporal,
  Determiner,
  Preposition,
  RelationWord,
  Value,
  None,
};

enum class Perspective { First, Third };

// The 13 relations of the memory grid.
enum Relation : int {
  kIdentity = 0,
  kProfession,
  kCity,
  kSpouse,
  kSibling,
  kParent,
  kChild,
  kFriend,
  kNeighbor,
  kTeacher,
  kWorksWith,
  kInterest,
  kBelongsTo,
};
constexpr int kRelationCount = 13;
const char* relation_name(int relation);
int relation_from_name(const std::string& name);

enum class EntityType { People = 0, Places, Organizations, Concepts };
constexpr int kEntityTypeCount = 4;
const char* entity_type_name(int type);

class Vocab {
 public:
  int id(const std::string& word) const;        // throws on unknown word
  bool contains(const std::string& word) const;
  const std::string& word(int id) const;
  TokenClass cls(int id) const;
  bool is(int id, TokenClass c) const { return cls(id) == c; }
  size_t size() const { return tokens_.size(); }

  // Lowercases, pads punctuation, splits on whitespace; throws on any token
  // outside the vocabulary.
  std::vector<int> tokenize(const std::string& text) const;
  std::string detokenize(const std::vector<int>& ids) const;

  std::vector<int> of_class(TokenClass c) const;

  int bos = -1, eos = -1, pad = -1, user = -1;

  friend class Grammar;

 private:
  std::vector<std::string> tokens_;
  std::vector<TokenClass> classes_;
  std::unordered_map<std::string, int> ids_;
  int add(const std::string& word, TokenClass c);
};

struct FactSym {
  Perspective perspective;
  int entity;  // token id; the user token for first-person facts
  int relation;
  int value;  // token id
};

struct Sentence {
  std::vector<int> tokens;  // no bos/eos
  std::vector<Role> roles;
  Perspective perspective = Perspective::Third;
  std::vector<FactSym> facts;
  bool messy = false;
};

struct MinimalPair {
  Sentence plus, minus;
  Role target_role;
  size_t pos_plus, pos_minus;
};

struct AdapterItem {
  std::vector<int> context;  // sentence or question tokens
  std::vector<int> aux;      // value / candidate / retrieved tokens, adapter specific
  int label;                 // class id or token position
};

struct AdapterDataset {
  std::string name;
  int num_classes = 0;
  std::vector<AdapterItem> items;
};

struct BenchCase {
  int id = 0;
  std::string category;
  std::string difficulty;
  std::string input_text;
  std::vector<FactSym> expected_facts;
  std::string query_text;
  int expected_answer = -1;  // token id; -1 means NOT_FOUND is the right outcome
  int expected_hops = 1;
};

struct BenchConfig {
  // category name -> case count; defaults mirror the benchmark's published
  // category sizes.
  std::vector<std::pair<std::string, int>> category_counts = {
      {"singular_clean", 32}, {"clean", 20},           {"singular_messy", 16},
      {"messy", 16},          {"multi_temporal", 8},   {"multi_domain", 8},
      {"multi_perspective", 8}, {"multi_sentence", 8}, {"multi_object", 8},
      {"multi_subject", 8},
  };
};

const std::vector<std::string>& bench_categories();
std::string difficulty_of_category(const std::string& category);

// Deterministic closed grammar over the synthetic vocabulary.
class Grammar {
 public:
  static Grammar build(uint64_t seed);

  const Vocab& vocab() const { return vocab_; }
  uint64_t seed() const { return seed_; }

  // Canonical surface word per relation, exactly kRelationCount entries.
  const std::vector<int>& relation_words() const { return relation_words_; }
  // Relation signalled by a token (canonical word or synonym), -1 if none.
  int relation_of_word(int token) const;
  EntityType value_type(int relation) const;
  EntityType entity_type_of_token(int token) const;

  // Template sampling. Clean statements carry gold roles and facts.
  Sentence fact_statement(Rng& rng, bool first_person) const;
  Sentence narrative(Rng& rng) const;
  Sentence chat_line(Rng& rng) const;
  Sentence make_messy(const Sentence& s, Rng& rng) const;

  // Clean annotated SVO-style sentences for direction/head work.
  std::vector<Sentence> annotated_sentences(size_t n, uint64_t seed) const;

  // Backbone training documents (token sequences without bos/eos).
  std::vector<std::vector<int>> training_documents(size_t n, uint64_t seed) const;

  // Question builders used by datasets, bench, and probes.
  struct Query {
    std::vector<int> tokens;
    int relation = -1;        // hop-0 relation
    int hop_relation = -1;    // hop-1 relation for two-hop queries, else -1
    int entity = -1;          // start entity token (user for first person)
    bool two_hop = false;
    bool wants_entity = false;  // reverse lookup queries
  };
  Query direct_query(Rng& rng, int relation, int entity_token) const;
  Query two_hop_query(Rng& rng, int chain_relation, int attr_relation) const;
  Query reverse_query(Rng& rng, int relation, int value_token) const;

  std::vector<MinimalPair> minimal_pairs(Role target, size_t n, uint64_t seed) const;
  AdapterDataset build_adapter_dataset(const std::string& adapter, size_t size,
                                       uint64_t seed) const;
  std::vector<BenchCase> build_bench(const BenchConfig& config, uint64_t seed) const;

  std::vector<int> names, professions, cities, orgs, concepts;

 private:
  Vocab vocab_;
  uint64_t seed_ = 0;
  std::vector<int> relation_words_;
  std::unordered_map<int, int> word_relation_;

  friend struct GrammarDetail;
};

std::string bench_to_jsonl(const Vocab& vocab, const std::vector<BenchCase>& bench);
std::vector<BenchCase> bench_from_jsonl(const Vocab& vocab, const std::string& text);

}  // namespace promind::corpus
