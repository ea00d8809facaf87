from django.core.management.base import BaseCommand, CommandError

from pipeline.mockdata import DEFAULT_ID_LABELS, DEFAULT_OOD_LABELS, \
                              generate_mock_manifest


class Command(BaseCommand):
    help = 'Write a synthetic manifest with planted ID and OOD objects.'

    def add_arguments(self, parser):
        parser.add_argument('--out', required=True)
        parser.add_argument('--n-id', type=int, default=25)
        parser.add_argument('--n-ood', type=int, default=25)
        parser.add_argument('--per-image', type=int, default=5)
        parser.add_argument('--id-labels', nargs='+',
                            default=list(DEFAULT_ID_LABELS))
        parser.add_argument('--ood-labels', nargs='+',
                            default=list(DEFAULT_OOD_LABELS))
        parser.add_argument('--size', type=int, default=160,
                            help='square image side in pixels')
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        try:
            path = generate_mock_manifest(options['out'],
                                          n_id=options['n_id'],
                                          n_ood=options['n_ood'],
                                          id_labels=options['id_labels'],
                                          ood_labels=options['ood_labels'],
                                          per_image=options['per_image'],
                                          image_size=(options['size'],) * 2,
                                          seed=options['seed'])
        except ValueError as e:
            raise CommandError(str(e), returncode=1)
        self.stdout.write(self.style.SUCCESS(f'manifest written to {path}'))
