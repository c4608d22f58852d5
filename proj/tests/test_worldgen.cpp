#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "gift/errors.hpp"
#include "gift/worldgen.hpp"

using namespace gift;

namespace {

WorldConfig small_world_config() {
    WorldConfig cfg;
    cfg.seed = 11;
    cfg.total_classes = 20;
    cfg.latent_dim = 10;
    cfg.image_dim = 12;
    cfg.text_dim = 9;
    cfg.spread_classes = 20;
    return cfg;
}

} // namespace

TEST_CASE("build_world is deterministic in the seed") {
    const WorldConfig cfg = small_world_config();
    const World a = World::build(cfg);
    const World b = World::build(cfg);
    CHECK(a.prototypes().vec() == b.prototypes().vec());
    CHECK(a.class_name(3) == b.class_name(3));

    WorldConfig other = cfg;
    other.seed = 12;
    const World c = World::build(other);
    CHECK(a.prototypes().vec() != c.prototypes().vec());
}

TEST_CASE("prototype angle floor is honored") {
    WorldConfig cfg;
    cfg.seed = 5;
    cfg.total_classes = 2;
    cfg.spread_classes = 2;
    cfg.latent_dim = 8;
    cfg.min_angle_deg = 60.0;
    const World w = World::build(cfg);
    double dot = 0;
    for (std::size_t i = 0; i < 8; ++i)
        dot += w.prototypes().at(0, i) * w.prototypes().at(1, i);
    const double angle = std::acos(std::min(1.0, std::abs(dot))) * 180.0 / 3.141592653589793;
    CHECK(angle >= 60.0);
}

TEST_CASE("impossible angle floors are rejected") {
    WorldConfig cfg;
    cfg.seed = 5;
    cfg.total_classes = 40;
    cfg.spread_classes = 40;
    cfg.latent_dim = 2; // at most a handful of rays fit 60 degrees apart in the plane
    cfg.min_angle_deg = 60.0;
    CHECK_THROWS_AS(World::build(cfg), ConfigError);
}

TEST_CASE("class names are unique and prompts templated") {
    const World w = World::build(small_world_config());
    std::set<std::string> names;
    for (int c = 0; c < w.num_classes(); ++c) {
        CHECK(!w.class_name(c).empty());
        names.insert(w.class_name(c));
        CHECK(w.prompt(c) == "a photo of a " + w.class_name(c) + ".");
    }
    CHECK(names.size() == static_cast<std::size_t>(w.num_classes()));
}

TEST_CASE("template_prompt is a byte-exact literal substitution") {
    CHECK(template_prompt("dog") == "a photo of a dog.");
    CHECK(template_prompt("oxford pet") == "a photo of a oxford pet.");
    // double templating double-wraps; nothing corrects articles or nesting
    CHECK(template_prompt(template_prompt("dog")) == "a photo of a a photo of a dog..");
    CHECK_THROWS_AS(template_prompt(""), ContractError);
}

TEST_CASE("sample_real: zero noise and identity transform reproduce clean projections") {
    WorldConfig cfg = small_world_config();
    cfg.sigma_image = 0.0;
    const World w = World::build(cfg);
    TaskSpec task;
    task.index = 1;
    task.class_ids = {2, 5};
    task.transform = DomainTransform::identity(cfg.image_dim);
    const LabeledSet set = sample_real(w, task, 6, Split::train);
    REQUIRE(set.labels.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const Tensor clean = w.clean_image(set.labels[i]);
        for (std::size_t j = 0; j < clean.size(); ++j)
            CHECK(set.images.at(i, j) == clean.data()[j]);
    }
}

TEST_CASE("sample_real: stratified labels and disjoint split streams") {
    const World w = World::build(small_world_config());
    TaskSpec task;
    task.index = 2;
    task.class_ids = {1, 4, 7};
    task.transform = DomainTransform::identity(12);
    const LabeledSet train = sample_real(w, task, 9, Split::train);
    int counts[3] = {0, 0, 0};
    for (int label : train.labels) {
        if (label == 1) ++counts[0];
        if (label == 4) ++counts[1];
        if (label == 7) ++counts[2];
    }
    CHECK(counts[0] == 3);
    CHECK(counts[1] == 3);
    CHECK(counts[2] == 3);

    const LabeledSet test = sample_real(w, task, 9, Split::test);
    int collisions = 0;
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) {
            bool same = true;
            for (std::size_t d = 0; d < 12 && same; ++d)
                if (train.images.at(i, d) != test.images.at(j, d)) same = false;
            if (same) ++collisions;
        }
    CHECK(collisions == 0);

    // deterministic re-draw
    const LabeledSet again = sample_real(w, task, 9, Split::train);
    CHECK(again.images.vec() == train.images.vec());
}

TEST_CASE("generate_synthetic: noiseless pairs equal clean projections") {
    WorldConfig cfg = small_world_config();
    cfg.sigma_gen = 0.0;
    cfg.gap_bias = 0.0;
    const World w = World::build(cfg);
    ClassPool pool;
    pool.base = {0, 1, 2, 3};
    Rng rng(99);
    const auto pairs = generate_synthetic(w, pool, 10, rng);
    REQUIRE(pairs.size() == 10);
    for (const auto& p : pairs) {
        const Tensor clean = w.clean_image(p.class_id);
        for (std::size_t j = 0; j < clean.size(); ++j)
            CHECK(p.image[j] == clean.data()[j]);
        CHECK(p.prompt == w.prompt(p.class_id));
        CHECK(p.text == w.text_input(p.class_id).vec());
    }
}

TEST_CASE("generate_synthetic contract errors") {
    const World w = World::build(small_world_config());
    ClassPool empty;
    Rng rng(1);
    CHECK_THROWS_AS(generate_synthetic(w, empty, 5, rng), ContractError);
    ClassPool pool;
    pool.base = {0};
    CHECK_THROWS_AS(generate_synthetic(w, pool, 0, rng), ContractError);
}

TEST_CASE("generate_synthetic samples the pool uniformly with replacement") {
    const World w = World::build(small_world_config());
    ClassPool pool;
    pool.base = {0, 1, 2, 3, 4};
    Rng rng(123);
    const int n = 10000;
    const auto pairs = generate_synthetic(w, pool, n, rng);
    int counts[5] = {0, 0, 0, 0, 0};
    for (const auto& p : pairs) ++counts[p.class_id];
    const double expected = n / 5.0;
    const double sigma = std::sqrt(n * 0.2 * 0.8);
    for (int c = 0; c < 5; ++c)
        CHECK(std::abs(counts[c] - expected) <= 3.0 * sigma);
}

TEST_CASE("regenerate_for_task: task-scoped streams, reproducible") {
    const World w = World::build(small_world_config());
    ClassPool pool;
    pool.base = {0, 1, 2};
    const auto t1 = regenerate_for_task(w, pool, 1, 8);
    const auto t2 = regenerate_for_task(w, pool, 2, 8);
    bool all_equal = true;
    for (std::size_t i = 0; i < 8 && all_equal; ++i)
        if (t1[i].image != t2[i].image || t1[i].class_id != t2[i].class_id)
            all_equal = false;
    CHECK(!all_equal);

    const auto t1_again = regenerate_for_task(w, pool, 1, 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(t1[i].image == t1_again[i].image);
        CHECK(t1[i].class_id == t1_again[i].class_id);
    }
}

TEST_CASE("class pool grows monotonically and keeps every absorbed class") {
    ClassPool pool;
    pool.base = {0, 1};
    CHECK(pool.all() == std::vector<int>{0, 1});
    pool.grow({2, 3});
    pool.grow({4});
    CHECK(pool.all() == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(pool.contains(3));
    CHECK(!pool.contains(9));
}

TEST_CASE("make_task_suite: partitions, severity profile, capacity check") {
    const World w = World::build(small_world_config());
    SuiteConfig cfg;
    cfg.tasks = 3;
    cfg.classes_per_task = 4;
    cfg.shift_profile = "none";
    const auto suite = make_task_suite(w, cfg, 8);
    REQUIRE(suite.size() == 3);
    std::set<int> seen;
    for (const auto& task : suite) {
        CHECK(task.transform.is_identity());
        for (int id : task.class_ids) {
            CHECK(id >= 8);
            CHECK(seen.insert(id).second); // pairwise disjoint
        }
    }

    SuiteConfig single;
    single.tasks = 1;
    single.classes_per_task = 12;
    single.shift_profile = "constant";
    single.shift_severity = 0.0;
    const auto one = make_task_suite(w, single, 8);
    REQUIRE(one.size() == 1);
    CHECK(one[0].class_ids.size() == 12);
    CHECK(one[0].transform.is_identity()); // severity zero

    SuiteConfig too_big;
    too_big.tasks = 4;
    too_big.classes_per_task = 10;
    CHECK_THROWS_AS(make_task_suite(w, too_big, 8), ConfigError);
}

TEST_CASE("shift profiles") {
    SuiteConfig cfg;
    cfg.tasks = 4;
    cfg.shift_severity = 1.0;
    cfg.shift_profile = "none";
    CHECK(shift_severity_for(cfg, 2) == 0.0);
    cfg.shift_profile = "constant";
    CHECK(shift_severity_for(cfg, 2) == 1.0);
    cfg.shift_profile = "ramp";
    CHECK(shift_severity_for(cfg, 2) == doctest::Approx(0.5));
    cfg.shift_profile = "alternating";
    CHECK(shift_severity_for(cfg, 1) == 1.0);
    CHECK(shift_severity_for(cfg, 2) == doctest::Approx(0.4));
}

TEST_CASE("text inputs are keyed on the prompt and carry jitter") {
    const World w = World::build(small_world_config());
    CHECK(w.text_input(3).vec() == w.text_input(3).vec());
    CHECK(w.text_input(3).vec() != w.text_input(4).vec());
}
