from django.contrib import admin

from experiments.models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'dataset', 'status', 'created_at', 'finished_at')
    list_filter = ('status',)
    readonly_fields = ('rows', 'error', 'output_dir')
