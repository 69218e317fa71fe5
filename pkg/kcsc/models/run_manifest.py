import logging

from django.db import DatabaseError, models

logger = logging.getLogger(__name__)


class RunManifest(models.Model):
    """
    Ledger entry for one command invocation.

    Records the resolved configuration, seed, paths, per-phase timings and
    metric rows, so that a run can be replayed from its config and seed.
    """
    COMMAND_CHOICES = [
        ('synth', 'Synth'),
        ('ingest', 'Ingest'),
        ('fit', 'Fit'),
        ('encode', 'Encode'),
        ('reconstruct', 'Reconstruct'),
        ('bench', 'Bench'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    config = models.JSONField(default=dict)
    seed = models.IntegerField(null=True, blank=True)
    input_paths = models.JSONField(default=list)
    output_path = models.CharField(max_length=1024, blank=True)
    timings = models.JSONField(default=dict, help_text="Wall-clock seconds per phase")
    metrics = models.JSONField(default=dict)
    rows = models.JSONField(default=list, help_text="Metric table rows (bench)")
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'run_manifests'
        ordering = ['-created_at']
        verbose_name = 'Run Manifest'
        verbose_name_plural = 'Run Manifests'
        indexes = [
            models.Index(fields=['command', '-created_at'], name='run_manifest_cmd_idx'),
        ]

    def __str__(self):
        return f"{self.command} -> {self.output_path}"

    @classmethod
    def record(cls, **fields):
        """Save a ledger row; returns an unsaved instance when the ledger is not migrated."""
        manifest = cls(**fields)
        try:
            manifest.save()
        except DatabaseError as exc:
            logger.warning(f"run ledger unavailable ({exc}); run `manage.py migrate` to enable it")
        return manifest

    @classmethod
    def latest_for(cls, command):
        return cls.objects.filter(command=command).order_by('-created_at').first()
