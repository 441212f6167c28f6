# services/run_registry.py
import logging
import os
from typing import Dict, List, Optional

from services.run_layout import RunLayout
from utils.artifact_helpers import atomic_write_json, load_json, sha256_file

logger = logging.getLogger(__name__)


class RunRegistry:
    """
    Service for tracking the artifacts of a run directory.

    Every registered artifact carries the content hash of its file and the
    fingerprint of the inputs that produced it; dependencies between artifacts
    are tracked so a stale upstream artifact can be detected.
    """

    def __init__(self, layout: RunLayout):
        self.layout = layout
        self.artifacts: Dict[str, dict] = {}  # Maps artifact name to its record
        self.dependencies: Dict[str, List[str]] = {}  # Maps artifact name to upstream names

    @classmethod
    def load(cls, layout: RunLayout) -> 'RunRegistry':
        """Registry persisted in the run directory, or an empty one."""
        registry = cls(layout)
        if os.path.exists(layout.registry_path):
            data = load_json(layout.registry_path)
            registry.artifacts = data.get('artifacts', {})
            registry.dependencies = data.get('dependencies', {})
        return registry

    def save(self) -> str:
        return atomic_write_json(self.layout.registry_path,
                                 {'artifacts': self.artifacts, 'dependencies': self.dependencies})

    def register_artifact(self, name: str, path: str, fingerprint: str,
                          data: Optional[dict] = None) -> dict:
        """
        Record an artifact file with its content hash.

        Args:
            name: Artifact name (e.g. 'stage1/inpainter_edge')
            path: File inside the run directory
            fingerprint: Hash of the inputs that produced the file
            data: Additional metadata

        Returns:
            dict: The stored record
        """
        record = {
            'path': os.path.relpath(os.path.abspath(path), self.layout.root),
            'sha256': sha256_file(path),
            'fingerprint': fingerprint,
        }
        if data:
            record['data'] = data
        self.artifacts[name] = record
        logger.debug(f"Registered {name} ({record['sha256'][:12]})")
        return record

    def get_artifact(self, name: str) -> Optional[dict]:
        return self.artifacts.get(name)

    def register_dependency(self, name: str, upstream: str) -> None:
        upstreams = self.dependencies.setdefault(name, [])
        if upstream not in upstreams:
            upstreams.append(upstream)

    def get_dependencies(self, name: str) -> List[str]:
        return list(self.dependencies.get(name, []))

    def is_current(self, name: str, fingerprint: str) -> bool:
        """True when the artifact exists, was built from `fingerprint` and its file is unchanged."""
        record = self.artifacts.get(name)
        if record is None or record['fingerprint'] != fingerprint:
            return False
        path = self.layout.path(record['path'])
        return os.path.exists(path) and sha256_file(path) == record['sha256']

    def validate_references(self) -> List[str]:
        """
        Validate artifact files and dependencies.

        Returns:
            list: Validation errors, if any
        """
        errors = []
        for name, record in sorted(self.artifacts.items()):
            path = self.layout.path(record['path'])
            if not os.path.exists(path):
                errors.append(f"Artifact {name} is missing its file {record['path']}")
            elif sha256_file(path) != record['sha256']:
                errors.append(f"Artifact {name} changed on disk since it was registered")
        for name, upstreams in sorted(self.dependencies.items()):
            if name not in self.artifacts:
                errors.append(f"Dependency source {name} is not registered")
            for upstream in upstreams:
                if upstream not in self.artifacts:
                    errors.append(f"Artifact {name} depends on unregistered {upstream}")
        return errors
