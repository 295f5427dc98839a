from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='PreferenceModel',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=255, unique=True)),
                ('document', models.JSONField(default=dict)),
                ('digest', models.CharField(max_length=64)),
                ('class_count', models.IntegerField()),
                ('alpha', models.FloatField(default=0.0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
        ),
        migrations.CreateModel(
            name='EvaluationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=255)),
                ('report', models.JSONField(default=dict)),
                ('mode', models.CharField(max_length=20)),
                ('provider_kind', models.CharField(max_length=20)),
                ('scene_count', models.IntegerField()),
                ('average_score', models.FloatField(blank=True, null=True)),
                ('infinite_count', models.IntegerField(default=0)),
                ('success_rate', models.FloatField()),
                ('matrix_digest', models.CharField(max_length=64)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'indexes': [models.Index(fields=['name', 'created_at'], name='packing_eva_name_9c1d2e_idx')],
            },
        ),
    ]
