# Generated by Django 4.2 on 2026-10-18 10:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Sweep',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('axis', models.CharField(max_length=50)),
                ('values', models.JSONField(default=list)),
                ('out_dir', models.CharField(max_length=500)),
                ('created', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created'],
                'indexes': [models.Index(fields=['-created'], name='pipeline_sweep_created_idx')],
            },
        ),
        migrations.CreateModel(
            name='Run',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('sweep_value', models.CharField(blank=True, max_length=100)),
                ('fingerprint', models.CharField(blank=True, max_length=16)),
                ('manifest', models.CharField(max_length=500)),
                ('out_dir', models.CharField(max_length=500)),
                ('mode', models.CharField(max_length=20)),
                ('mask_ratio', models.FloatField()),
                ('steps', models.PositiveIntegerField()),
                ('alpha', models.FloatField()),
                ('beta', models.FloatField()),
                ('seed', models.BigIntegerField(default=0)),
                ('inpaint_backend', models.CharField(max_length=250)),
                ('n_scored', models.PositiveIntegerField(default=0)),
                ('n_errors', models.PositiveIntegerField(default=0)),
                ('n_filtered', models.PositiveIntegerField(default=0)),
                ('inpaint_calls', models.PositiveIntegerField(default=0)),
                ('auroc', models.FloatField(blank=True, null=True)),
                ('fpr_at_95', models.FloatField(blank=True, null=True)),
                ('threshold', models.FloatField(blank=True, null=True)),
                ('wall_time', models.FloatField(default=0)),
                ('status', models.CharField(choices=[('ok', 'ok'), ('partial', 'partial'), ('failed', 'failed')], default='ok', max_length=10)),
                ('error', models.TextField(blank=True)),
                ('config', models.JSONField(default=dict)),
                ('created', models.DateTimeField(auto_now_add=True)),
                ('sweep', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.CASCADE, related_name='runs', to='pipeline.sweep')),
            ],
            options={
                'ordering': ['-created'],
                'indexes': [models.Index(fields=['-created'], name='pipeline_run_created_idx'), models.Index(fields=['fingerprint'], name='pipeline_run_fp_idx')],
            },
        ),
    ]
