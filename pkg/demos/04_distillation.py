"""Distilling a dense teacher into a factor-based student.

A small synthetic task stands in for a real model: sequences of tokens are
classified by the majority class of their sememes. The teacher is a dense
embedding + mean pool + linear classifier. The student keeps the
classifier and replaces the table with factors, first matching embeddings
and pooled states, then adding KL and cross-entropy.

Takes a few seconds.
"""
from see_embedding import toy
from see_embedding.distill import LossWeights
from see_embedding.embedding import param_count

task = toy.gen_task(seed=0)
print(f"{task.V} tokens, majority-class accuracy {toy.majority_baseline(task):.3f}")

teacher = toy.train_teacher(task, d=64, epochs=30, lr=0.5, seed=0)
print(f"teacher test accuracy {teacher.test_acc:.3f} ({teacher.model.table.size:,} embedding params)")

cfg = toy.student_config(task, d=64, o=2, r=3, m=2, seed=0)
student = toy.train_student_see(task, teacher.model, cfg, LossWeights(alpha=1, beta=1, gamma=1, T=2),
                                stage_boundary=2, epochs=30, lr=0.1, seed=0)
print(f"student: {param_count(student.model.cfg):,} params, {student.compression:.1f}x smaller\n")

print("epoch  stage    emb_mse    test_acc")
for e in student.trace[:5] + student.trace[-2:]:
    print(f"{e.epoch:5d}  {e.report.stage.value:7s}  {e.embedding_mse_start:.3e}  {e.test_acc:.3f}")

print(f"\nstudent / teacher accuracy: {student.test_acc / teacher.test_acc:.3f}")
