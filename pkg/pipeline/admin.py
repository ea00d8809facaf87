import csv
import datetime
from django.http import HttpResponse
from django.contrib import admin
from .models import Run, Sweep


def export_to_csv(modeladmin, request, queryset):
    opts = modeladmin.model._meta
    content_disposition = f'attachment; filename={opts.verbose_name}.csv'
    response = HttpResponse(content_type='text/csv')
    response['Content-Disposition'] = content_disposition
    writer = csv.writer(response)
    fields = [field for field in opts.get_fields()
              if not field.many_to_many and not field.one_to_many
              and field.name != 'config']
    writer.writerow([field.verbose_name for field in fields])
    for obj in queryset:
        data_row = []
        for field in fields:
            value = getattr(obj, field.name)
            if isinstance(value, datetime.datetime):
                value = value.strftime('%Y-%m-%d %H:%M:%S')
            elif isinstance(value, Sweep):
                value = value.id
            data_row.append(value)
        writer.writerow(data_row)
    return response
export_to_csv.short_description = 'Export to CSV'


class RunInline(admin.TabularInline):
    model = Run
    fields = ['sweep_value', 'fingerprint', 'auroc', 'fpr_at_95', 'status']
    readonly_fields = fields
    extra = 0


@admin.register(Sweep)
class SweepAdmin(admin.ModelAdmin):
    list_display = ['id', 'axis', 'values', 'out_dir', 'created']
    list_filter = ['axis', 'created']
    inlines = [RunInline]


@admin.register(Run)
class RunAdmin(admin.ModelAdmin):
    list_display = ['id', 'fingerprint', 'mode', 'mask_ratio', 'steps',
                    'alpha', 'beta', 'inpaint_backend', 'auroc',
                    'fpr_at_95', 'n_scored', 'n_errors', 'status', 'created']
    list_filter = ['status', 'mode', 'inpaint_backend', 'created']
    search_fields = ['fingerprint', 'manifest']
    raw_id_fields = ['sweep']
    actions = [export_to_csv]
