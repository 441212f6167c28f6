# services/run_layout.py
import os

from config import active_config

OUTPUT_KINDS = ('input', 'intermediate', 'final', 'mask')


class RunLayout:
    """
    Paths inside a run directory.

    run/{config.json, manifest.json, registry.json, data/{night,day}/,
    stage1/, stage2/, outputs/{input,intermediate,final,mask}/, losses/,
    reports/, ablation/}
    """

    def __init__(self, run_dir: str):
        self.root = os.path.abspath(run_dir)

    def path(self, *parts: str) -> str:
        return os.path.join(self.root, *parts)

    @property
    def config_path(self) -> str:
        return self.path(active_config.CONFIG_FILE_NAME)

    @property
    def manifest_path(self) -> str:
        return self.path(active_config.MANIFEST_FILE_NAME)

    @property
    def registry_path(self) -> str:
        return self.path('registry.json')

    def night_path(self, pair_id: str) -> str:
        return self.path('data', 'night', f"{pair_id}.png")

    def day_path(self, pair_id: str) -> str:
        return self.path('data', 'day', f"{pair_id}.png")

    def stage_dir(self, stage: int) -> str:
        return self.path(f"stage{stage}")

    def output_path(self, kind: str, pair_id: str) -> str:
        return self.path('outputs', kind, f"{pair_id}.png")

    def loss_path(self, name: str) -> str:
        return self.path('losses', f"{name}.csv")

    @property
    def reports_dir(self) -> str:
        return self.path('reports')

    @property
    def ablation_dir(self) -> str:
        return self.path('ablation')
