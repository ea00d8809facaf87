from django.db import models


class Sweep(models.Model):
    axis = models.CharField(max_length=50)
    values = models.JSONField(default=list)
    out_dir = models.CharField(max_length=500)
    created = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created']
        indexes = [
            models.Index(fields=['-created'], name='pipeline_sweep_created_idx'),
        ]

    def __str__(self):
        return f'Sweep {self.id} over {self.axis}'


class Run(models.Model):
    STATUS_OK = 'ok'
    STATUS_PARTIAL = 'partial'
    STATUS_FAILED = 'failed'
    STATUS_CHOICES = [
        (STATUS_OK, 'ok'),
        (STATUS_PARTIAL, 'partial'),
        (STATUS_FAILED, 'failed'),
    ]

    sweep = models.ForeignKey(Sweep,
                              related_name='runs',
                              null=True,
                              blank=True,
                              on_delete=models.CASCADE)
    sweep_value = models.CharField(max_length=100, blank=True)
    fingerprint = models.CharField(max_length=16, blank=True)
    manifest = models.CharField(max_length=500)
    out_dir = models.CharField(max_length=500)
    mode = models.CharField(max_length=20)
    mask_ratio = models.FloatField()
    steps = models.PositiveIntegerField()
    alpha = models.FloatField()
    beta = models.FloatField()
    seed = models.BigIntegerField(default=0)
    inpaint_backend = models.CharField(max_length=250)
    n_scored = models.PositiveIntegerField(default=0)
    n_errors = models.PositiveIntegerField(default=0)
    n_filtered = models.PositiveIntegerField(default=0)
    inpaint_calls = models.PositiveIntegerField(default=0)
    auroc = models.FloatField(null=True, blank=True)
    fpr_at_95 = models.FloatField(null=True, blank=True)
    threshold = models.FloatField(null=True, blank=True)
    wall_time = models.FloatField(default=0)
    status = models.CharField(max_length=10,
                              choices=STATUS_CHOICES,
                              default=STATUS_OK)
    error = models.TextField(blank=True)
    config = models.JSONField(default=dict)
    created = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created']
        indexes = [
            models.Index(fields=['-created'], name='pipeline_run_created_idx'),
            models.Index(fields=['fingerprint'], name='pipeline_run_fp_idx'),
        ]

    def __str__(self):
        return f'Run {self.id} ({self.fingerprint or self.status})'

    @classmethod
    def record(cls, config, result=None, sweep=None, sweep_value='',
               error=''):
        """Store a finished (or failed) run in the registry."""
        run = cls(sweep=sweep,
                  sweep_value=sweep_value,
                  manifest=config.manifest,
                  out_dir=config.out_dir,
                  mode=config.mode,
                  mask_ratio=config.mask_ratio,
                  steps=config.steps,
                  alpha=config.alpha,
                  beta=config.beta,
                  seed=config.seed,
                  inpaint_backend=config.inpaint_backend,
                  config=config.to_dict(),
                  error=error)
        if result is None:
            run.status = cls.STATUS_FAILED
        else:
            run.fingerprint = result.fingerprint
            run.n_scored = len(result.scored)
            run.n_errors = len(result.errors)
            run.n_filtered = len(result.filtered)
            run.inpaint_calls = result.inpaint_calls
            run.wall_time = result.stage_times.get('total', 0.0)
            run.status = cls.STATUS_PARTIAL if result.partial \
                else cls.STATUS_OK
            if result.report is not None:
                run.auroc = result.report.auroc
                run.fpr_at_95 = result.report.fpr_at_95
                run.threshold = result.report.threshold_used
        run.save()
        return run
