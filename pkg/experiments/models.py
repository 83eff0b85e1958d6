from django.db import models


class ExperimentRun(models.Model):
    QUEUED = 'queued'
    RUNNING = 'running'
    DONE = 'done'
    FAILED = 'failed'
    STATUS_CHOICES = [(QUEUED, 'Queued'), (RUNNING, 'Running'), (DONE, 'Done'), (FAILED, 'Failed')]

    dataset = models.CharField(max_length=500)
    config = models.JSONField()
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default=QUEUED)
    compress_samples = models.BooleanField(default=False)
    rows = models.JSONField(null=True, blank=True)
    error = models.TextField(blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    def __str__(self):
        return f"Run {self.pk} on {self.dataset} ({self.status})"

    def to_dict(self, include_rows=False):
        data = {
            'id': self.pk,
            'dataset': self.dataset,
            'status': self.status,
            'config': self.config,
            'output_dir': self.output_dir,
            'error': self.error,
            'created_at': self.created_at.isoformat() if self.created_at else None,
            'finished_at': self.finished_at.isoformat() if self.finished_at else None,
        }
        if include_rows: data['rows'] = self.rows
        return data

    class Meta:
        indexes = [
            models.Index(fields=['status'], name='experiments_status_idx'),
        ]
        ordering = ['-created_at']
