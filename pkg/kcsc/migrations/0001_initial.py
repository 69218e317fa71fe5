# Generated by Django 5.2.4 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('synth', 'Synth'), ('ingest', 'Ingest'), ('fit', 'Fit'), ('encode', 'Encode'), ('reconstruct', 'Reconstruct'), ('bench', 'Bench')], max_length=20)),
                ('config', models.JSONField(default=dict)),
                ('seed', models.IntegerField(blank=True, null=True)),
                ('input_paths', models.JSONField(default=list)),
                ('output_path', models.CharField(blank=True, max_length=1024)),
                ('timings', models.JSONField(default=dict, help_text='Wall-clock seconds per phase')),
                ('metrics', models.JSONField(default=dict)),
                ('rows', models.JSONField(default=list, help_text='Metric table rows (bench)')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Run Manifest',
                'verbose_name_plural': 'Run Manifests',
                'db_table': 'run_manifests',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['command', '-created_at'], name='run_manifest_cmd_idx')],
            },
        ),
    ]
