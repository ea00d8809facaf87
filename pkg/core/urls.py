from django.contrib import admin
from django.urls import path
admin.autodiscover()
admin.site.enable_nav_sidebar = False

urlpatterns = [
    path('admin/', admin.site.urls),
]


admin.site.site_header = 'ronin runs'
admin.site.site_title = 'ronin runs'
admin.site.index_title = 'run registry'
