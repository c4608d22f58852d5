#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gift/rng.hpp"
#include "gift/tensor.hpp"

namespace gift {

struct WorldConfig {
    std::uint64_t seed = 42;
    int total_classes = 80;
    int latent_dim = 12;
    int image_dim = 32;
    int text_dim = 24;
    double sigma_image = 0.1;     // real-sample image noise
    double sigma_text = 0.05;     // carrier scale for the per-prompt jitter
    double min_angle_deg = 30.0;  // separation floor for spread prototypes
    double sigma_gen = -1.0;      // generator noise; < 0 follows sigma_image
    double gap_bias = 0.0;        // generator domain-gap offset magnitude

    // Prototypes beyond the first `spread_classes` ids come in consecutive
    // fine-grained groups of `cluster_size` within `cluster_angle_deg` of a
    // group center. Cluster one downstream task's classes together and
    // telling them apart needs sharper features than the spread base set.
    int spread_classes = 40;
    int cluster_size = 8;
    double cluster_angle_deg = 60.0;

    double effective_sigma_gen() const { return sigma_gen < 0.0 ? sigma_image : sigma_gen; }
    void validate() const;
};

// Seeded procedural world: class prototypes on the latent unit sphere plus
// fixed linear maps into image and text input space. Stands in for the
// pretraining distribution, the downstream datasets, and the generator.
class World {
public:
    static World build(const WorldConfig& cfg);

    const WorldConfig& config() const { return cfg_; }
    int num_classes() const { return cfg_.total_classes; }
    const std::string& class_name(int id) const;
    std::string prompt(int id) const;

    const Tensor& prototypes() const { return protos_; } // K x d_lat, unit rows

    // Noiseless projections of a class prototype.
    Tensor clean_image(int id) const; // 1 x d_img
    // Deterministic text input for a class: projection plus a small jitter
    // keyed on the prompt string, so equal prompts always map to equal inputs.
    Tensor text_input(int id) const;  // 1 x d_txt

    Tensor gap_offset() const; // 1 x d_img, already scaled by gap_bias

private:
    WorldConfig cfg_;
    Tensor protos_;  // K x d_lat
    Tensor a_img_;   // d_lat x d_img
    Tensor a_txt_;   // d_lat x d_txt
    Tensor gap_dir_; // 1 x d_img, unit
    std::vector<std::string> names_;
};

// "a photo of a {name}." with the name substituted verbatim.
std::string template_prompt(const std::string& class_name);

// The buffer of class ids available to the generator: the base set plus
// every downstream task's classes absorbed so far.
struct ClassPool {
    std::vector<int> base;
    std::vector<std::vector<int>> downstream;

    std::vector<int> all() const;
    bool contains(int id) const;
    void grow(const std::vector<int>& task_classes);
};

struct DomainTransform {
    Tensor linear; // d x d
    Tensor offset; // 1 x d

    Tensor apply(const Tensor& rows) const;
    static DomainTransform identity(int d);
    bool is_identity() const;
};

struct TaskSpec {
    int index = 0; // 1-based position in the sequence
    std::vector<int> class_ids;
    DomainTransform transform;
    int train_per_class = 200;
    int test_per_class = 100;
};

struct LabeledSet {
    Tensor images;           // N x d_img
    std::vector<int> labels; // global class ids
};

struct SyntheticPair {
    std::vector<double> image; // d_img
    std::vector<double> text;  // d_txt
    int class_id = -1;
    std::string prompt;
};

enum class Split { train, test };

// Stratified draw (round-robin labels, class counts within +-1) of
// domain-transformed noisy samples. Deterministic in (world seed, task,
// split); the two splits use disjoint streams.
LabeledSet sample_real(const World& world, const TaskSpec& task, int n, Split split);

// n class-conditioned pairs, classes drawn uniformly with replacement from
// the pool. Images carry generator noise and the optional gap offset but no
// task domain transform.
std::vector<SyntheticPair> generate_synthetic(const World& world, const ClassPool& pool,
                                              int n, Rng& rng);

// Fresh synthetic set for task t on a task-scoped stream; the previous set is
// simply dropped by the caller.
std::vector<SyntheticPair> regenerate_for_task(const World& world, const ClassPool& pool,
                                               int task_index, int n);

struct SuiteConfig {
    int tasks = 5;
    int classes_per_task = 8;
    int train_per_class = 200;
    int test_per_class = 100;
    std::string shift_profile = "constant"; // none|constant|ramp|alternating
    double shift_severity = 1.0;

    void validate() const;
};

// Disjoint class partitions starting after the first `reserved` ids (the base
// set), with per-task affine image distortions following the shift profile.
std::vector<TaskSpec> make_task_suite(const World& world, const SuiteConfig& cfg,
                                      int reserved);

// Per-task severity resolved from the profile; exposed for tests.
double shift_severity_for(const SuiteConfig& cfg, int task_index);

void dump_dataset_csv(std::ostream& out, const World& world,
                      const std::vector<TaskSpec>& suite);

} // namespace gift
