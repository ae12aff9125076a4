import logging
import tempfile

from wearclass import (DescriptorSet, EvalConfig, PipelineConfig, extract_descriptors, monte_carlo_eval,
                       synthesize)

logging.basicConfig(level=logging.INFO, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

with tempfile.TemporaryDirectory() as out_dir:
    dataset = synthesize(out_dir, n_per_class=50, seed=0)
    shape, _ = extract_descriptors(dataset, 'shapefeat', progress=True)
    contour, _ = extract_descriptors(dataset, 'borchiz', n_jobs=-1, progress=True)

descriptors = DescriptorSet.from_frames(shape, contour)
for descriptor in ('shapefeat', 'borchiz', 'early', 'cotrans', 'late'):
    config = PipelineConfig(descriptor=descriptor, eval=EvalConfig(runs=20))
    report = monte_carlo_eval(dataset, descriptors, config, n_jobs=-1)
    print(f"{descriptor:>9s}: {report.mean_accuracy:.4f} +- {report.std_accuracy:.4f}")
