// Trains a non-social teacher, a social Base model and a distilled student on
// a small synthetic world, then re-ranks one user's list with MMR and DPP.
#include <iostream>

#include "divsr/divsr.hpp"

int main() {
  using namespace divsr;

  SyntheticSpec world;
  world.seed = 7;
  const auto data = generate_synthetic(world);
  const auto split = split_holdout(data.interactions, 0.2, 7);

  TrainConfig cfg;
  cfg.backbone = Backbone::DiffNet;
  cfg.batch_size = 256;
  cfg.eval_k = 50;
  cfg.epochs = 60;

  const auto teacher = train_teacher(cfg, split, &data.social);
  cfg.teacher_strategy = TeacherStrategy::None;
  const auto base = train_student(cfg, split, data.social, nullptr);
  cfg.teacher_strategy = TeacherStrategy::SameFamily;
  cfg.beta = 0.1;
  const auto student = train_student(cfg, split, data.social, &teacher.model);

  std::cout << "model\t" << kReportHeader << '\n';
  for (const auto& [name, model] : {std::pair{"w/o social", &teacher.model},
                                    std::pair{"Base", &base.model},
                                    std::pair{"DivSR", &student.model}}) {
    std::cout << name << '\t' << format_report_row(evaluate_model(*model, split, &data.social, 50), true)
              << '\n';
  }

  const auto fo = forward(student.model, split.train, &data.social);
  const UserId user = 0;
  const auto candidates = build_candidates(fo, user, split.train.items_of(user), 50);
  auto print = [](const char* label, const std::vector<ItemId>& items) {
    std::cout << label;
    for (auto i : items) std::cout << ' ' << i;
    std::cout << '\n';
  };
  print("top-10 ", topk(score_all_items(fo, user, split.train.items_of(user)), 10));
  print("mmr-10 ", mmr_rerank(candidates, 10, 0.5));
  print("dpp-10 ", dpp_rerank(candidates, 10, 0.5));
}
